//! Leader-to-follower message link with a fixed delivery delay.

use std::collections::VecDeque;

use crate::controller::ControlInput;

/// What a leader broadcasts to its follower each step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborMessage {
    pub sender: usize,
    pub u: ControlInput,
    pub theta: f64,
    pub stamp: f64,
}

/// Delivers every sent message exactly `delay_steps` steps after it was sent.
///
/// Until the first message has aged enough the receiver sees the priming
/// message given at construction.
#[derive(Debug, Clone)]
pub struct MessageChannel {
    delay_steps: usize,
    queue: VecDeque<NeighborMessage>,
    current: NeighborMessage,
}

impl MessageChannel {
    pub fn new(delay_steps: usize, prime: NeighborMessage) -> Self {
        Self {
            delay_steps,
            queue: VecDeque::with_capacity(delay_steps + 1),
            current: prime,
        }
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Sends this step's message and returns the one due for delivery now.
    pub fn exchange(&mut self, msg: NeighborMessage) -> NeighborMessage {
        self.queue.push_back(msg);
        if self.queue.len() > self.delay_steps {
            self.current = self.queue.pop_front().expect("non-empty queue");
        }
        self.current
    }
}
