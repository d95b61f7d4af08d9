//! Event detection on per-side trigger channels and sampling of the state
//! trajectory at those events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::TimeSeries;
use crate::section::{SectionSample, Side, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Rising,
    Falling,
}

/// Threshold-crossing rule applied independently to each side's trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub threshold: f64,
    /// Minimum gap in seconds to the previous kept event on the same side.
    pub debounce: f64,
    pub direction: Direction,
}

impl Default for EventSpec {
    fn default() -> Self {
        Self { threshold: 0.5, debounce: 0.2, direction: Direction::Rising }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub label: Side,
}

/// Strictly increasing, strictly alternating event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Event>", into = "Vec<Event>")]
pub struct EventTrain {
    events: Vec<Event>,
}

impl EventTrain {
    pub fn new(events: Vec<Event>) -> Result<Self> {
        if events.is_empty() {
            return Err(Error::NoEvents);
        }
        for (i, w) in events.windows(2).enumerate() {
            if !(w[1].time > w[0].time) {
                return Err(Error::NonMonotonicTime { index: i + 1 });
            }
            if w[1].label == w[0].label {
                return Err(Error::LabelAlternation { index: i + 1, label: w[1].label });
            }
        }
        if events.iter().any(|e| !e.time.is_finite()) {
            return Err(Error::NonFinite("event times".into()));
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

impl TryFrom<Vec<Event>> for EventTrain {
    type Error = Error;

    fn try_from(events: Vec<Event>) -> Result<Self> {
        Self::new(events)
    }
}

impl From<EventTrain> for Vec<Event> {
    fn from(t: EventTrain) -> Self {
        t.events
    }
}

/// Crossing times of one channel, linearly interpolated between samples.
fn crossings(ts: &TimeSeries, spec: &EventSpec) -> Vec<f64> {
    let x = &ts.channels()[0].values;
    let thr = spec.threshold;
    let mut out: Vec<f64> = Vec::new();
    for i in 1..x.len() {
        let (a, b) = (x[i - 1], x[i]);
        let crossed = match spec.direction {
            Direction::Rising => a < thr && b >= thr,
            Direction::Falling => a > thr && b <= thr,
        };
        if !crossed {
            continue;
        }
        let t = ts.time(i - 1) + ts.dt() * (thr - a) / (b - a);
        match out.last() {
            Some(&prev) if t - prev < spec.debounce => {}
            _ => out.push(t),
        }
    }
    out
}

/// Detects events on each side's trigger (first channel of each series) and
/// merges them into one alternating train.
pub fn detect_events(left_trigger: &TimeSeries, right_trigger: &TimeSeries, spec: &EventSpec) -> Result<EventTrain> {
    if !(spec.debounce >= 0.0) {
        return Err(Error::InvalidParameter(format!("debounce must be >= 0, got {}", spec.debounce)));
    }
    if !left_trigger.same_grid(right_trigger) {
        return Err(Error::InvalidSeries("left and right triggers are sampled on different grids".into()));
    }
    let mut events: Vec<Event> = crossings(left_trigger, spec)
        .into_iter()
        .map(|time| Event { time, label: Side::Left })
        .chain(crossings(right_trigger, spec).into_iter().map(|time| Event { time, label: Side::Right }))
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    EventTrain::new(events)
}

/// Linearly interpolated state at every event. Events must lie within
/// `[t0 + dt, t_end − dt]`.
pub fn sample_sections(states: &TimeSeries, train: &EventTrain) -> Result<Vec<SectionSample>> {
    let (lo, hi) = (states.t0() + states.dt(), states.t_end() - states.dt());
    let eps = 1e-9 * states.dt();
    train
        .events()
        .iter()
        .enumerate()
        .map(|(idx, e)| {
            if e.time < lo - eps || e.time > hi + eps {
                return Err(Error::EventOutOfRange { time: e.time, lo, hi });
            }
            let pos = (e.time - states.t0()) / states.dt();
            let i = (pos.floor() as usize).min(states.n_samples() - 2);
            let frac = pos - i as f64;
            let values = states
                .channels()
                .iter()
                .map(|c| {
                    let (a, b) = (c.values[i], c.values[i + 1]);
                    if frac == 0.0 {
                        a
                    } else {
                        a + frac * (b - a)
                    }
                })
                .collect();
            Ok(SectionSample { k: idx + 1, time: e.time, label: e.label, state: StateVector::new(values)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::{Channel, ChannelRole};
    use proptest::prelude::*;

    fn trigger(values: Vec<f64>, t0: f64, dt: f64) -> TimeSeries {
        TimeSeries::new(t0, dt, vec![Channel::new("trig", ChannelRole::Trigger, values)]).unwrap()
    }

    /// Square wave that is high on [r, r + 0.25) for each rising time r.
    fn square(rises: &[f64], dt: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                if rises.iter().any(|&r| t >= r - 1e-12 && t < r + 0.25) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn square_waves_merge_into_alternating_train() {
        let dt = 0.01;
        let left = trigger(square(&[1.0, 2.0, 3.0], dt, 400), 0.0, dt);
        let right = trigger(square(&[1.5, 2.5], dt, 400), 0.0, dt);
        let train = detect_events(&left, &right, &EventSpec::default()).unwrap();
        let expected =
            [(1.0, Side::Left), (1.5, Side::Right), (2.0, Side::Left), (2.5, Side::Right), (3.0, Side::Left)];
        assert_eq!(train.len(), expected.len());
        for (e, (t, side)) in train.events().iter().zip(expected) {
            assert_eq!(e.label, side);
            assert!((e.time - t).abs() <= dt, "{} vs {t}", e.time);
        }
    }

    #[test]
    fn flat_trigger_has_no_events() {
        let flat = trigger(vec![0.0; 100], 0.0, 0.01);
        assert_eq!(detect_events(&flat, &flat, &EventSpec::default()), Err(Error::NoEvents));
    }

    #[test]
    fn debounce_suppresses_chatter() {
        let dt = 0.001;
        // up at 1.000, down at 1.002, up again at 1.004
        let x: Vec<f64> = (0..2000)
            .map(|i| {
                let t = i as f64 * dt;
                if (1.0 - 1e-9..1.002 - 1e-9).contains(&t) || (1.004 - 1e-9..1.2).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let left = trigger(x, 0.0, dt);
        let right = trigger(square(&[1.5], dt, 2000), 0.0, dt);
        let spec = EventSpec { threshold: 0.5, debounce: 0.05, direction: Direction::Rising };
        let train = detect_events(&left, &right, &spec).unwrap();
        assert_eq!(train.len(), 2);
        assert!((train.events()[0].time - 1.0).abs() <= dt);
    }

    #[test]
    fn falling_direction() {
        let dt = 0.01;
        let left = trigger(square(&[1.0], dt, 300), 0.0, dt);
        let right = trigger(square(&[1.5], dt, 300), 0.0, dt);
        let spec = EventSpec { direction: Direction::Falling, ..EventSpec::default() };
        let train = detect_events(&left, &right, &spec).unwrap();
        assert!((train.events()[0].time - 1.25).abs() <= dt);
        assert_eq!(train.events()[1].label, Side::Right);
    }

    #[test]
    fn non_alternating_result_reports_index() {
        let dt = 0.01;
        let left = trigger(square(&[1.0, 2.0], dt, 300), 0.0, dt);
        let right = trigger(square(&[2.5], dt, 300), 0.0, dt);
        assert_eq!(
            detect_events(&left, &right, &EventSpec::default()),
            Err(Error::LabelAlternation { index: 1, label: Side::Left })
        );
    }

    fn ramp_states() -> TimeSeries {
        let dt = 0.01;
        let t: Vec<f64> = (0..500).map(|i| i as f64 * dt).collect();
        let other: Vec<f64> = t.iter().map(|t| 2.0 - 3.0 * t).collect();
        TimeSeries::new(
            0.0,
            dt,
            vec![Channel::new("t", ChannelRole::Angle, t), Channel::new("v", ChannelRole::Velocity, other)],
        )
        .unwrap()
    }

    #[test]
    fn sampling_on_grid_and_between() {
        let states = ramp_states();
        let train =
            EventTrain::new(vec![Event { time: 1.0, label: Side::Left }, Event { time: 2.345, label: Side::Right }])
                .unwrap();
        let s = sample_sections(&states, &train).unwrap();
        assert_eq!(s[0].state.as_slice(), &[states.channels()[0].values[100], states.channels()[1].values[100]]);
        assert!((s[1].state.as_slice()[0] - 2.345).abs() < 1e-12);
        assert!((s[1].state.as_slice()[1] - (2.0 - 3.0 * 2.345)).abs() < 1e-12);
        assert_eq!((s[0].k, s[1].k), (1, 2));
        assert_eq!(s[1].label, Side::Right);
    }

    #[test]
    fn sampling_outside_range_fails() {
        let states = ramp_states();
        let train = EventTrain::new(vec![Event { time: -0.01, label: Side::Left }]).unwrap();
        assert!(matches!(sample_sections(&states, &train), Err(Error::EventOutOfRange { .. })));
        let train = EventTrain::new(vec![Event { time: 0.005, label: Side::Left }]).unwrap();
        assert!(matches!(sample_sections(&states, &train), Err(Error::EventOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn interpolation_exact_on_affine_channels(
            times in prop::collection::btree_set(10u32..4900, 1..20),
            slope in -5.0f64..5.0,
            icpt in -5.0f64..5.0,
        ) {
            let dt = 0.001;
            let vals: Vec<f64> = (0..5000).map(|i| icpt + slope * i as f64 * dt).collect();
            let states = TimeSeries::new(0.0, dt, vec![Channel::new("a", ChannelRole::Angle, vals)]).unwrap();
            let mut label = Side::Left;
            let events: Vec<Event> = times.iter().map(|&t| {
                let e = Event { time: t as f64 * 1e-3 + 3.3e-4, label };
                label = label.other();
                e
            }).collect();
            let train = EventTrain::new(events).unwrap();
            let s = sample_sections(&states, &train).unwrap();
            prop_assert_eq!(s.len(), train.len());
            for (sec, e) in s.iter().zip(train.events()) {
                let truth = icpt + slope * e.time;
                prop_assert!((sec.state.as_slice()[0] - truth).abs() <= 1e-12 * truth.abs().max(1.0));
            }
        }

        #[test]
        fn detection_shifts_with_time_origin(shift in -50.0f64..50.0) {
            let dt = 0.01;
            let l = square(&[1.0, 2.0], dt, 300);
            let r = square(&[1.5, 2.5], dt, 300);
            let spec = EventSpec::default();
            let base = detect_events(&trigger(l.clone(), 0.0, dt), &trigger(r.clone(), 0.0, dt), &spec).unwrap();
            let moved = detect_events(&trigger(l, shift, dt), &trigger(r, shift, dt), &spec).unwrap();
            prop_assert_eq!(base.len(), moved.len());
            for (a, b) in base.events().iter().zip(moved.events()) {
                prop_assert!((b.time - a.time - shift).abs() < 1e-9);
                prop_assert_eq!(a.label, b.label);
            }
        }
    }
}
