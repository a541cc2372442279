/*
  Copyright 2026 The kt-core Authors

  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.
*/

//! In-process topic broker with offset replay.
//!
//! Each topic is an append-only log addressed by offset. Subscribers hold a
//! cursor into the log: they first drain retained messages from their start
//! offset, then block for live ones. Retention drops the oldest messages once
//! a topic exceeds its bound; offsets keep counting.

use std::collections::{HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use log::warn;
use thiserror::Error;

use super::wire::Envelope;

pub const DEFAULT_RETENTION: usize = 100_000;

#[derive(Debug, Error)]
pub enum BrokerError {
    #[error("broker is shut down")]
    Unavailable,
    #[error("topic name must be nonempty")]
    EmptyTopic,
    #[error("journal I/O failed: {0}")]
    Journal(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct BrokerConfig {
    /// Messages retained per topic.
    pub retention: usize,
    /// When set, every message is also appended to `<dir>/<topic>.jsonl`
    /// and existing journals are replayed on startup.
    pub journal_dir: Option<PathBuf>,
}

impl Default for BrokerConfig {
    fn default() -> Self {
        BrokerConfig {
            retention: DEFAULT_RETENTION,
            journal_dir: None,
        }
    }
}

/// Acknowledgement of a durable enqueue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ack {
    pub topic: String,
    pub offset: u64,
    pub seq: u64,
}

struct LogState {
    base_offset: u64,
    messages: VecDeque<Arc<Envelope>>,
    next_seq: HashMap<String, u64>,
    journal: Option<BufWriter<File>>,
    closed: bool,
}

impl LogState {
    fn end_offset(&self) -> u64 {
        self.base_offset + self.messages.len() as u64
    }
}

struct TopicLog {
    state: Mutex<LogState>,
    ready: Condvar,
}

impl TopicLog {
    fn lock(&self) -> MutexGuard<'_, LogState> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }
}

struct Inner {
    config: BrokerConfig,
    topics: Mutex<HashMap<String, Arc<TopicLog>>>,
    open: Mutex<bool>,
}

/// Cheap to clone; all clones share the same topics.
#[derive(Clone)]
pub struct Broker {
    inner: Arc<Inner>,
}

impl Default for Broker {
    fn default() -> Self {
        Broker::new()
    }
}

impl std::fmt::Debug for Broker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Broker").field("topics", &self.topics()).finish()
    }
}

fn journal_file_name(topic: &str) -> String {
    let safe: String = topic
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{safe}.jsonl")
}

impl Broker {
    pub fn new() -> Self {
        Broker::with_config(BrokerConfig::default()).expect("in-memory broker")
    }

    pub fn with_config(config: BrokerConfig) -> Result<Self, BrokerError> {
        let broker = Broker {
            inner: Arc::new(Inner {
                config,
                topics: Mutex::new(HashMap::new()),
                open: Mutex::new(true),
            }),
        };
        if let Some(dir) = broker.inner.config.journal_dir.clone() {
            fs::create_dir_all(&dir)?;
            broker.replay_journals(&dir)?;
        }
        Ok(broker)
    }

    fn replay_journals(&self, dir: &std::path::Path) -> Result<(), BrokerError> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            for line in BufReader::new(File::open(&path)?).lines() {
                let line = line?;
                match Envelope::from_json(line.as_bytes()) {
                    Ok(msg) => {
                        let log = self.log(&msg.topic)?;
                        let mut state = log.lock();
                        let next = state.next_seq.entry(msg.session_id.clone()).or_insert(0);
                        *next = (*next).max(msg.seq + 1);
                        self.push(&mut state, Arc::new(msg));
                    }
                    Err(e) => warn!("skipping journal line in {}: {e}", path.display()),
                }
            }
        }
        Ok(())
    }

    fn is_open(&self) -> bool {
        *self.inner.open.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn log(&self, topic: &str) -> Result<Arc<TopicLog>, BrokerError> {
        if topic.is_empty() {
            return Err(BrokerError::EmptyTopic);
        }
        let mut topics = self.inner.topics.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(log) = topics.get(topic) {
            return Ok(log.clone());
        }
        let journal = match &self.inner.config.journal_dir {
            Some(dir) => Some(BufWriter::new(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(dir.join(journal_file_name(topic)))?,
            )),
            None => None,
        };
        let log = Arc::new(TopicLog {
            state: Mutex::new(LogState {
                base_offset: 0,
                messages: VecDeque::new(),
                next_seq: HashMap::new(),
                journal,
                closed: !self.is_open(),
            }),
            ready: Condvar::new(),
        });
        topics.insert(topic.to_owned(), log.clone());
        Ok(log)
    }

    fn push(&self, state: &mut LogState, msg: Arc<Envelope>) {
        state.messages.push_back(msg);
        while state.messages.len() > self.inner.config.retention.max(1) {
            state.messages.pop_front();
            state.base_offset += 1;
        }
    }

    /// Creates the topic if needed.
    pub fn create_topic(&self, topic: &str) -> Result<(), BrokerError> {
        self.log(topic).map(|_| ())
    }

    /// Appends `msg` to `topic`, stamping its topic and per-session seq.
    pub fn publish(&self, topic: &str, mut msg: Envelope) -> Result<Ack, BrokerError> {
        if !self.is_open() {
            return Err(BrokerError::Unavailable);
        }
        let log = self.log(topic)?;
        let mut state = log.lock();
        if state.closed {
            return Err(BrokerError::Unavailable);
        }
        let next = state.next_seq.entry(msg.session_id.clone()).or_insert(0);
        msg.seq = *next;
        *next += 1;
        msg.topic = topic.to_owned();
        if let Some(journal) = state.journal.as_mut() {
            writeln!(journal, "{}", msg.to_json())?;
            journal.flush()?;
        }
        let seq = msg.seq;
        let offset = state.end_offset();
        self.push(&mut state, Arc::new(msg));
        drop(state);
        log.ready.notify_all();
        Ok(Ack {
            topic: topic.to_owned(),
            offset,
            seq,
        })
    }

    /// Stream of `topic` starting at log offset `from_offset`. Unknown topics
    /// are created empty.
    pub fn subscribe(&self, topic: &str, from_offset: u64) -> Result<Subscription, BrokerError> {
        if !self.is_open() {
            return Err(BrokerError::Unavailable);
        }
        Ok(Subscription {
            topic: topic.to_owned(),
            log: self.log(topic)?,
            next: from_offset,
        })
    }

    /// Stops accepting publishes; subscribers drain what is retained, then end.
    pub fn shutdown(&self) {
        *self.inner.open.lock().unwrap_or_else(|p| p.into_inner()) = false;
        let topics = self.inner.topics.lock().unwrap_or_else(|p| p.into_inner());
        for log in topics.values() {
            log.lock().closed = true;
            log.ready.notify_all();
        }
    }

    pub fn topics(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .inner
            .topics
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .keys()
            .cloned()
            .collect();
        names.sort();
        names
    }

    /// Offset the next publish on `topic` will receive.
    pub fn end_offset(&self, topic: &str) -> u64 {
        let topics = self.inner.topics.lock().unwrap_or_else(|p| p.into_inner());
        topics.get(topic).map_or(0, |log| log.lock().end_offset())
    }
}

#[derive(Debug)]
pub enum Recv {
    Message(Arc<Envelope>),
    Timeout,
    Closed,
}

/// Ordered cursor over one topic.
pub struct Subscription {
    topic: String,
    log: Arc<TopicLog>,
    next: u64,
}

impl Subscription {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    /// Offset of the next message this subscription will yield.
    pub fn next_offset(&self) -> u64 {
        self.next
    }

    fn take(&mut self, state: &LogState) -> Option<Arc<Envelope>> {
        if self.next < state.base_offset {
            warn!(
                "subscriber on '{}' fell behind retention: skipping offsets {}..{}",
                self.topic, self.next, state.base_offset
            );
            self.next = state.base_offset;
        }
        let index = (self.next - state.base_offset) as usize;
        let msg = state.messages.get(index).cloned()?;
        self.next += 1;
        Some(msg)
    }

    pub fn try_recv(&mut self) -> Option<Arc<Envelope>> {
        let log = self.log.clone();
        let state = log.lock();
        self.take(&state)
    }

    pub fn recv_timeout(&mut self, timeout: Duration) -> Recv {
        let deadline = Instant::now() + timeout;
        let log = self.log.clone();
        let mut state = log.lock();
        loop {
            if let Some(msg) = self.take(&state) {
                return Recv::Message(msg);
            }
            if state.closed {
                return Recv::Closed;
            }
            let now = Instant::now();
            if now >= deadline {
                return Recv::Timeout;
            }
            state = log
                .ready
                .wait_timeout(state, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    /// Blocks until a message arrives. `None` once the broker is shut down
    /// and the retained tail is drained.
    pub fn recv(&mut self) -> Option<Arc<Envelope>> {
        let log = self.log.clone();
        let mut state = log.lock();
        loop {
            if let Some(msg) = self.take(&state) {
                return Some(msg);
            }
            if state.closed {
                return None;
            }
            state = log.ready.wait(state).unwrap_or_else(|p| p.into_inner());
        }
    }
}

impl Iterator for Subscription {
    type Item = Arc<Envelope>;

    fn next(&mut self) -> Option<Self::Item> {
        self.recv()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::Gripper;
    use crate::streaming::wire::STATES;

    fn state(session: &str, t: u64) -> Envelope {
        Envelope::state(session, t, vec![0.0], Gripper::Open)
    }

    #[test]
    fn ordered_delivery_with_seq() {
        let broker = Broker::new();
        let mut sub = broker.subscribe(STATES, 0).unwrap();
        for t in 0..100 {
            broker.publish(STATES, state("a", t)).unwrap();
        }
        let seqs: Vec<u64> = (0..100).map(|_| sub.try_recv().unwrap().seq).collect();
        assert_eq!(seqs, (0..100).collect::<Vec<_>>());
        assert!(sub.try_recv().is_none());
    }

    #[test]
    fn retention_drops_oldest() {
        let broker = Broker::with_config(BrokerConfig {
            retention: 10,
            journal_dir: None,
        })
        .unwrap();
        for t in 0..25 {
            broker.publish("t", state("a", t)).unwrap();
        }
        let mut sub = broker.subscribe("t", 0).unwrap();
        let first = sub.try_recv().unwrap();
        assert_eq!(first.seq, 15);
        assert_eq!(broker.end_offset("t"), 25);
    }

    #[test]
    fn publish_without_subscribers_is_retained() {
        let broker = Broker::new();
        let ack = broker.publish("t", state("a", 0)).unwrap();
        assert_eq!(ack.offset, 0);
        assert_eq!(broker.subscribe("t", 0).unwrap().try_recv().unwrap().seq, 0);
    }

    #[test]
    fn shutdown_rejects_publish_and_ends_streams() {
        let broker = Broker::new();
        broker.publish("t", state("a", 0)).unwrap();
        let mut sub = broker.subscribe("t", 0).unwrap();
        broker.shutdown();
        assert!(matches!(broker.publish("t", state("a", 1)), Err(BrokerError::Unavailable)));
        assert!(sub.recv().is_some());
        assert!(sub.recv().is_none());
        assert!(matches!(sub.recv_timeout(Duration::from_millis(1)), Recv::Closed));
    }

    #[test]
    fn empty_topic_rejected() {
        assert!(matches!(
            Broker::new().publish("", state("a", 0)),
            Err(BrokerError::EmptyTopic)
        ));
    }

    #[test]
    fn journal_survives_restart() {
        let dir = tempfile::tempdir().unwrap();
        let config = BrokerConfig {
            retention: DEFAULT_RETENTION,
            journal_dir: Some(dir.path().to_owned()),
        };
        {
            let broker = Broker::with_config(config.clone()).unwrap();
            for t in 0..5 {
                broker.publish(STATES, state("a", t)).unwrap();
            }
        }
        let broker = Broker::with_config(config).unwrap();
        let ack = broker.publish(STATES, state("a", 5)).unwrap();
        assert_eq!(ack.seq, 5);
        assert_eq!(ack.offset, 5);
    }
}
