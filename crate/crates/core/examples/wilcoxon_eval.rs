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

//! Paired evaluation of two teaching conditions over twelve subjects:
//! Wilcoxon signed-rank on stacked cubes and the mean duration overhead.

use kt_core::metrics::{
    critical_value, duration_overhead, evaluate, paired_t_statistic, wilcoxon_signed_rank, EvalMode, PairedSample,
    SessionRecord,
};

fn main() {
    // stacked cubes per subject: C1, C2
    let stacked = [(2, 4), (1, 3), (3, 4), (2, 2), (0, 1), (4, 4), (1, 4), (3, 1), (2, 3), (1, 2), (0, 3), (4, 2)];
    // task durations per subject, seconds
    let durations = [
        (95.0, 140.0), (120.0, 151.0), (88.0, 131.0), (101.0, 150.0), (130.0, 170.0), (92.0, 133.0),
        (110.0, 160.0), (99.0, 139.0), (105.0, 142.0), (117.0, 166.0), (90.0, 128.0), (126.0, 171.0),
    ];

    let samples: Vec<PairedSample> = stacked
        .iter()
        .enumerate()
        .map(|(i, (a, b))| PairedSample::new(format!("p{:02}", i + 1), *a as f64, *b as f64))
        .collect();
    for alpha in [0.05, 0.01] {
        match wilcoxon_signed_rank(&samples, alpha) {
            Ok(result) => println!("{result}"),
            Err(e) => println!("alpha {alpha}: {e}"),
        }
    }
    println!("W_c for n = 6..12 at 0.05: {:?}", (6..=12).map(|n| critical_value(n, 0.05).unwrap()).collect::<Vec<_>>());

    let times: Vec<PairedSample> = durations
        .iter()
        .enumerate()
        .map(|(i, (a, b))| PairedSample::new(format!("p{:02}", i + 1), *a, *b))
        .collect();
    let overhead = duration_overhead(&times).unwrap();
    println!(
        "duration overhead: {:.1} s ({:.0}%), paired t = {:.2}",
        overhead.mean_diff,
        overhead.mean_relative * 100.0,
        paired_t_statistic(&times).unwrap()
    );

    // the same data as a results log
    let records: Vec<SessionRecord> = stacked
        .iter()
        .zip(&durations)
        .enumerate()
        .flat_map(|(i, ((s1, s2), (d1, d2)))| {
            let subject = format!("p{:02}", i + 1);
            [("C1", *s1, *d1), ("C2", *s2, *d2)].map(|(condition, cubes, duration_s)| {
                SessionRecord {
                    session_id: format!("{subject}-{condition}"),
                    subject_id: None,
                    condition: None,
                    duration_s,
                    states: (duration_s * 20.0) as usize,
                    cubes_stacked: cubes,
                }
                .with_subject(subject.clone(), condition)
            })
        })
        .collect();
    print!("{}", evaluate(&records, EvalMode::Histogram, 0.05).unwrap());
    print!("{}", evaluate(&records, EvalMode::Paired, 0.05).unwrap());
}
