use std::collections::VecDeque;

use parking_lot::{Condvar, Mutex};
use thiserror::Error;

use super::Transition;
use crate::game::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("queue closed")]
pub struct QueueClosed;

struct Inner {
    items: VecDeque<Transition>,
    evictions: u64,
    closed: bool,
}

/// Bounded FIFO. A push at capacity evicts the oldest item and counts it.
pub struct ReplayQueue {
    capacity: usize,
    inner: Mutex<Inner>,
    ready: Condvar,
}

impl ReplayQueue {
    pub fn new(capacity: usize) -> ReplayQueue {
        assert!(capacity > 0, "queue capacity");
        ReplayQueue {
            capacity,
            inner: Mutex::new(Inner {
                items: VecDeque::with_capacity(capacity),
                evictions: 0,
                closed: false,
            }),
            ready: Condvar::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&self, t: Transition) -> Result<(), QueueClosed> {
        let mut g = self.inner.lock();
        if g.closed {
            return Err(QueueClosed);
        }
        if g.items.len() == self.capacity {
            g.items.pop_front();
            g.evictions += 1;
        }
        g.items.push_back(t);
        drop(g);
        self.ready.notify_all();
        Ok(())
    }

    /// Takes the oldest `n` items, or `None` if fewer are queued.
    pub fn try_pop_batch(&self, n: usize) -> Option<Vec<Transition>> {
        let mut g = self.inner.lock();
        (g.items.len() >= n).then(|| g.items.drain(..n).collect())
    }

    /// Blocks until `n` items are available; `None` once closed and short.
    pub fn pop_batch(&self, n: usize) -> Option<Vec<Transition>> {
        let mut g = self.inner.lock();
        loop {
            if g.items.len() >= n {
                return Some(g.items.drain(..n).collect());
            }
            if g.closed {
                return None;
            }
            self.ready.wait(&mut g);
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn evictions(&self) -> u64 {
        self.inner.lock().evictions
    }

    pub fn close(&self) {
        self.inner.lock().closed = true;
        self.ready.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.inner.lock().closed
    }

    pub fn snapshot(&self) -> Vec<Transition> {
        self.inner.lock().items.iter().cloned().collect()
    }

    /// Replaces the contents, keeping the newest `capacity` items.
    pub fn restore(&self, items: Vec<Transition>, evictions: u64) {
        let mut g = self.inner.lock();
        g.items = items.into_iter().collect();
        while g.items.len() > self.capacity {
            g.items.pop_front();
        }
        g.evictions = evictions;
    }
}

pub struct RoleQueues {
    pub queues: [ReplayQueue; 3],
}

impl RoleQueues {
    pub fn new(capacity: usize) -> RoleQueues {
        RoleQueues {
            queues: [ReplayQueue::new(capacity), ReplayQueue::new(capacity), ReplayQueue::new(capacity)],
        }
    }

    pub fn role(&self, role: Role) -> &ReplayQueue {
        &self.queues[role.index()]
    }

    pub fn push(&self, t: Transition) -> Result<(), QueueClosed> {
        self.queues[t.role.index()].push(t)
    }

    pub fn all_hold(&self, n: usize) -> bool {
        self.queues.iter().all(|q| q.len() >= n)
    }

    pub fn close(&self) {
        self.queues.iter().for_each(ReplayQueue::close);
    }

    pub fn evictions(&self) -> u64 {
        self.queues.iter().map(ReplayQueue::evictions).sum()
    }
}
