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

use std::sync::Arc;

use kt_core::engine::{Engine, Rates, ScriptEvent};
use kt_core::fixtures::Fixture;
use kt_core::ik::IkParams;
use kt_core::kinematics::Pose;
use kt_core::session::{Gripper, Medium, Mode, SessionState, VoiceCommand, VoiceCommandKind};
use kt_core::streaming::topics::STATES;
use kt_core::streaming::{Body, Broker};
use proptest::prelude::*;

use VoiceCommandKind::{Close, Open, Start, Stop};

fn planar_session() -> SessionState {
    SessionState::new(Arc::new(Fixture::Planar2Link.chain()), IkParams::default(), vec![0.3, 0.4]).unwrap()
}

fn engine(broker: &Broker) -> Engine {
    Engine::new(planar_session(), broker.clone(), Rates::default()).unwrap()
}

#[test]
fn gripper_flips_at_command_times() {
    let broker = Broker::new();
    let mut states = broker.subscribe(STATES, 0).unwrap();
    let mut e = engine(&broker);
    let script = vec![
        ScriptEvent::command(0, Close),
        ScriptEvent::command(0, Start),
        ScriptEvent::sphere(0, Pose::from_position(0.8, 0.3, 0.0)),
        ScriptEvent::command(2000, Open),
        ScriptEvent::command(4000, Close),
        ScriptEvent::command(6000, Stop),
    ];
    e.run_virtual(&script, None);
    let kinds: Vec<_> = e.session().event_log().iter().map(|c| (c.kind, c.timestamp_ms)).collect();
    assert_eq!(kinds, vec![(Close, 0), (Start, 0), (Open, 2000), (Close, 4000), (Stop, 6000)]);

    let demo = e.take_demonstrations().pop().unwrap();
    for s in &demo.trajectory.states {
        let expected = if (2000..4000).contains(&s.timestamp_ms) {
            Gripper::Open
        } else {
            Gripper::Closed
        };
        assert_eq!(s.gripper, expected, "t={}", s.timestamp_ms);
    }
    // the stop lands on a record tick; the stop is applied first
    assert_eq!(demo.trajectory.states.len(), 120);
    assert_eq!(demo.trajectory.t_end_ms, 5950);

    let act = &demo.act;
    assert_eq!(act.interval, (0, 6000));
    assert!(act.media.contains(&Medium::Gesture) && act.media.contains(&Medium::Voice));
    let gesture = act.component(Medium::Gesture).unwrap();
    assert!(gesture.start_ms >= act.interval.0 && gesture.end_ms <= act.interval.1);
    assert_eq!(act.info, demo.trajectory.session_id);
    let in_act: Vec<_> = act.events.iter().map(|c| c.kind).collect();
    assert_eq!(in_act, vec![Start, Open, Close, Stop]);

    // the stream carries the same states followed by the stop marker
    let msgs: Vec<_> = std::iter::from_fn(|| states.try_recv()).collect();
    assert_eq!(msgs.len(), 121);
    assert!(msgs.last().unwrap().is_stop_marker());
    for (m, s) in msgs.iter().zip(&demo.trajectory.states) {
        match &m.body {
            Body::State { q, gripper } => {
                assert_eq!(q, &s.q);
                assert_eq!(*gripper, s.gripper);
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn virtual_cadence_is_exact() {
    let broker = Broker::new();
    let mut e = engine(&broker);
    let script = vec![ScriptEvent::command(0, Start)];
    let stats = e.run_virtual(&script, Some(10_000)).clone();
    assert_eq!(stats.ik_ticks, 300);
    assert_eq!(stats.record_ticks, 200);
    assert_eq!(stats.states_published, 200);
}

#[test]
fn custom_rates() {
    let broker = Broker::new();
    let mut e = Engine::new(planar_session(), broker, Rates::new(100, 25).unwrap()).unwrap();
    let stats = e.run_virtual(&[], Some(2_000)).clone();
    assert_eq!((stats.ik_ticks, stats.record_ticks), (200, 50));
    assert!(Rates::new(10, 20).is_err());
    assert!(Rates::new(10, 0).is_err());
}

#[test]
fn rejected_commands_are_reported_not_fatal() {
    let broker = Broker::new();
    let mut e = engine(&broker);
    let script = vec![
        ScriptEvent::command(0, Stop),
        ScriptEvent::command(100, Start),
        ScriptEvent::command(200, Start),
        ScriptEvent::command(1000, Stop),
    ];
    let stats = e.run_virtual(&script, None).clone();
    assert_eq!(stats.errors.len(), 2, "{:?}", stats.errors);
    assert_eq!(e.take_demonstrations().len(), 1);
    assert_eq!(e.session().mode(), Mode::Idle);
}

#[test]
fn engine_is_deterministic() {
    let script: Vec<ScriptEvent> = std::iter::once(ScriptEvent::command(0, Start))
        .chain((1..40).map(|k| ScriptEvent::sphere(k * 50, Pose::from_position(0.9 - 0.01 * k as f64, 0.2, 0.0))))
        .chain(std::iter::once(ScriptEvent::command(2500, Stop)))
        .collect();
    let run = || {
        let mut e = engine(&Broker::new());
        e.run_virtual(&script, None);
        e.take_demonstrations().pop().unwrap().trajectory
    };
    assert_eq!(run(), run());
}

#[derive(Debug, Clone)]
enum Step {
    Voice(VoiceCommandKind),
    Ik(f64, f64),
    Record,
}

fn arb_step() -> impl Strategy<Value = Step> {
    prop_oneof![
        prop_oneof![Just(Start), Just(Stop), Just(Open), Just(Close)].prop_map(Step::Voice),
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(x, y)| Step::Ik(x, y)),
        Just(Step::Record),
        Just(Step::Record),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn recording_invariants(steps in prop::collection::vec(arb_step(), 1..120)) {
        let mut s = planar_session();
        let mut gripper = Gripper::Open;
        let mut t = 0u64;
        let mut recorded = 0usize;
        for step in steps {
            t += 10;
            match step {
                Step::Voice(kind) => {
                    let mode = s.mode();
                    let ok = s.handle_voice(VoiceCommand::new(kind, t)).is_ok();
                    let legal = matches!((mode, kind), (Mode::Idle, Start) | (Mode::Recording, Stop) | (_, Open) | (_, Close));
                    prop_assert_eq!(ok, legal);
                    match kind {
                        Open => gripper = Gripper::Open,
                        Close => gripper = Gripper::Closed,
                        Start if ok => recorded = 0,
                        _ => {}
                    }
                }
                Step::Ik(x, y) => s.tick_ik(Pose::from_position(x, y, 0.0)).unwrap(),
                Step::Record => {
                    let idle = s.mode() == Mode::Idle;
                    let msg = s.tick_record(t);
                    // nothing is appended while idle
                    prop_assert_eq!(msg.is_none(), idle);
                    if let Some(msg) = msg {
                        prop_assert_eq!(msg.seq, recorded as u64);
                        recorded += 1;
                        let last = s.partial_states().last().unwrap();
                        prop_assert_eq!(last.gripper, gripper);
                        prop_assert_eq!(&last.q[..], s.q_current());
                    }
                }
            }
            prop_assert_eq!(s.gripper(), gripper);
            if s.mode() == Mode::Idle {
                prop_assert!(s.partial_states().is_empty());
            } else {
                prop_assert_eq!(s.partial_states().len(), recorded);
            }
            while s.has_stopped_recording() {
                if let Ok((traj, act)) = s.finalize() {
                    prop_assert!(traj.t_start_ms >= act.interval.0 && traj.t_end_ms <= act.interval.1);
                }
            }
        }
    }
}
