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

//! Topic broker basics: ordered per-topic logs, per-session sequence
//! numbers, replay from an offset, a live subscriber on another thread, and
//! the length-prefixed wire frame.

use std::thread;
use std::time::Duration;

use kt_core::session::Gripper;
use kt_core::streaming::topics::{COMMANDS, STATES};
use kt_core::streaming::{read_frame, write_frame, Broker, CommandKind, Envelope, Recv};

fn main() {
    let broker = Broker::new();
    let mut live = broker.subscribe(STATES, 0).unwrap();
    let listener = thread::spawn(move || {
        let mut seen = 0;
        while let Recv::Message(msg) = live.recv_timeout(Duration::from_millis(200)) {
            seen += 1;
            if seen <= 3 {
                println!("live: {} seq {} t={} ms", msg.session_id, msg.seq, msg.timestamp_ms);
            }
        }
        seen
    });

    for session in ["kt-0001", "kt-0002"] {
        broker.publish(COMMANDS, Envelope::command(COMMANDS, session, 0, CommandKind::Start)).unwrap();
        for k in 0..5u64 {
            let ack = broker
                .publish(STATES, Envelope::state(session, 50 * k, vec![0.1 * k as f64; 7], Gripper::Open))
                .unwrap();
            if k == 0 {
                println!("{session}: first state at offset {} seq {}", ack.offset, ack.seq);
            }
        }
    }
    println!("live subscriber saw {} states", listener.join().unwrap());

    // late joiner replays the second session only
    let mut late = broker.subscribe(STATES, 5).unwrap();
    let replayed: Vec<_> = std::iter::from_fn(|| late.try_recv()).map(|m| (m.session_id.clone(), m.seq)).collect();
    println!("replay from offset 5: {replayed:?}");

    let msg = Envelope::state("kt-0001", 100, vec![0.0, 1.5], Gripper::Closed);
    let mut frame = Vec::new();
    write_frame(&mut frame, &msg).unwrap();
    let body = read_frame(&mut &frame[..]).unwrap().unwrap();
    println!("frame: 4-byte length {} + {}", u32::from_be_bytes(frame[..4].try_into().unwrap()), String::from_utf8_lossy(&body));
}
