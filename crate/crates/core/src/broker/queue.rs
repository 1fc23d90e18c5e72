use std::collections::VecDeque;
use std::sync::Mutex;

use tokio::sync::Notify;

use super::Observation;

/// Per-agent inbox: many producers, one consumer.
#[derive(Debug, Default)]
pub struct MessageQueue {
    items: Mutex<VecDeque<Observation>>,
    ready: Notify,
}

impl MessageQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, observation: Observation) {
        self.items.lock().expect("queue poisoned").push_back(observation);
        self.ready.notify_one();
    }

    /// Takes everything pending, oldest first.
    pub fn drain(&self) -> Vec<Observation> {
        self.items.lock().expect("queue poisoned").drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.items.lock().expect("queue poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Waits until at least one observation is pending, then drains.
    pub async fn recv(&self) -> Vec<Observation> {
        loop {
            let notified = self.ready.notified();
            let batch = self.drain();
            if !batch.is_empty() {
                return batch;
            }
            notified.await;
        }
    }
}
