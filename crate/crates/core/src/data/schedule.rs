use serde::Serialize;

use super::{DataError, IstsInstance};

/// Events closer together than this (hours) belong to the same step.
pub const TIME_TOLERANCE: f64 = 1e-9;

/// One active sensor at one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScheduleEntry {
    pub sensor: usize,
    pub value: f64,
    /// Hours since this sensor's previous step, zero at its first observation.
    pub delta: f64,
}

/// Per-instance execution plan: which sensor cells run at each step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwitchSchedule {
    pub sensor_count: usize,
    pub timestamps: Vec<f64>,
    /// Active entries per step, ordered by sensor index.
    pub steps: Vec<Vec<ScheduleEntry>>,
    /// Index of each sensor's final step, `None` if it is never observed.
    pub last_seen: Vec<Option<usize>>,
}

impl SwitchSchedule {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn event_count(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    /// Steps at which `sensor` is active.
    pub fn steps_of(&self, sensor: usize) -> Vec<usize> {
        self.steps
            .iter()
            .enumerate()
            .filter(|(_, entries)| entries.iter().any(|e| e.sensor == sensor))
            .map(|(j, _)| j)
            .collect()
    }

    /// Canonical JSON bytes, used to compare schedules for exact equality.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("schedule serializes")
    }
}

/// Groups events into steps and derives per-sensor delays.
pub fn build_schedule(
    instance: &IstsInstance,
    sensor_count: usize,
) -> Result<SwitchSchedule, DataError> {
    instance.validate_events(sensor_count)?;
    let mut timestamps: Vec<f64> = Vec::new();
    let mut steps: Vec<Vec<ScheduleEntry>> = Vec::new();
    let mut previous: Vec<Option<f64>> = vec![None; sensor_count];
    let mut last_seen = vec![None; sensor_count];

    for e in &instance.events {
        let new_step = match timestamps.last() {
            Some(&t) => e.time - t > TIME_TOLERANCE,
            None => true,
        };
        if new_step {
            timestamps.push(e.time);
            steps.push(Vec::new());
        }
        let j = steps.len() - 1;
        let t = timestamps[j];
        if last_seen[e.sensor] == Some(j) {
            return Err(DataError::DuplicateInStep {
                id: instance.id.clone(),
                sensor: e.sensor,
                time: e.time,
            });
        }
        let delta = previous[e.sensor].map_or(0.0, |p| t - p);
        previous[e.sensor] = Some(t);
        last_seen[e.sensor] = Some(j);
        steps[j].push(ScheduleEntry {
            sensor: e.sensor,
            value: e.value,
            delta,
        });
    }
    for entries in &mut steps {
        entries.sort_by_key(|e| e.sensor);
    }
    Ok(SwitchSchedule {
        sensor_count,
        timestamps,
        steps,
        last_seen,
    })
}

impl IstsInstance {
    /// Event-level checks shared by schedule construction and loading.
    pub(crate) fn validate_events(&self, sensor_count: usize) -> Result<(), DataError> {
        let statics = self.statics.as_ref().map_or(0, Vec::len);
        self.validate(sensor_count, statics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;

    fn instance(events: &[(f64, usize, f64)]) -> IstsInstance {
        IstsInstance {
            id: "x".into(),
            label: 0,
            statics: None,
            events: events
                .iter()
                .map(|&(t, s, v)| Observation::new(t, s, v))
                .collect(),
        }
    }

    #[test]
    fn unrolled_example_delays() {
        // sensors are 0-based: {1,3}@t1 {2,3}@t2 {1}@t3 {1,2}@t4
        let inst = instance(&[
            (0.0, 0, 1.0),
            (0.0, 2, 1.0),
            (1.0, 1, 1.0),
            (1.0, 2, 1.0),
            (2.0, 0, 1.0),
            (3.0, 0, 1.0),
            (3.0, 1, 1.0),
        ]);
        let s = build_schedule(&inst, 3).unwrap();
        assert_eq!(s.timestamps, vec![0.0, 1.0, 2.0, 3.0]);
        let d = |j: usize, m: usize| s.steps[j].iter().find(|e| e.sensor == m).unwrap().delta;
        assert_eq!(d(0, 0), 0.0);
        assert_eq!(d(0, 2), 0.0);
        assert_eq!(d(1, 2), 1.0);
        assert_eq!(d(3, 0), 1.0);
        assert_eq!(d(3, 1), 2.0);
        assert_eq!(s.last_seen, vec![Some(3), Some(3), Some(1)]);
    }

    #[test]
    fn single_event_and_never_seen() {
        let s = build_schedule(&instance(&[(4.5, 1, 2.0)]), 3).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.steps[0][0].delta, 0.0);
        assert_eq!(s.last_seen, vec![None, Some(0), None]);
    }

    #[test]
    fn near_equal_times_share_a_step() {
        let s = build_schedule(&instance(&[(1.0, 1, 0.0), (1.0 + 1e-10, 0, 0.0)]), 2);
        // (1.0, 1) then (1.0+1e-10, 0) is a valid sort order and collapses to one step
        let s = s.unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.steps[0].iter().map(|e| e.sensor).collect::<Vec<_>>(), vec![0, 1]);
        let dup = build_schedule(&instance(&[(1.0, 0, 0.0), (1.0 + 1e-10, 0, 0.0)]), 2);
        assert!(matches!(dup, Err(DataError::DuplicateInStep { .. })));
    }

    #[test]
    fn empty_instance_rejected() {
        assert!(matches!(
            build_schedule(&instance(&[]), 2),
            Err(DataError::EmptyInstance { .. })
        ));
    }

    #[test]
    fn dense_unit_spacing() {
        let mut ev = Vec::new();
        for j in 0..4 {
            for m in 0..3 {
                ev.push((j as f64, m, 0.5));
            }
        }
        let s = build_schedule(&instance(&ev), 3).unwrap();
        for (j, step) in s.steps.iter().enumerate() {
            assert_eq!(step.len(), 3);
            for e in step {
                assert_eq!(e.delta, if j == 0 { 0.0 } else { 1.0 });
            }
        }
    }
}
