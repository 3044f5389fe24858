//! Deterministic discrete-event kernel.
//!
//! A time-ordered event queue plus a simulated clock. Everything the MAC and
//! PHY layers do is scheduled here. Two guarantees matter:
//!
//! - events dispatch in nondecreasing time order, ties broken by insertion
//!   order (a monotonically increasing sequence counter), so a run is a
//!   stable sort of its schedule calls;
//! - replaying the same schedule produces a bit-identical trace on any
//!   platform.
//!
//! The queue is a binary heap keyed on `(time, seq)`. Cancellation is lazy:
//! cancelled sequence numbers are skipped at pop time.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::ops::{Add, AddAssign, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Simulated time in integer nanoseconds since run start.
///
/// Integer, not floating point: collision timing stays exact and traces are
/// replayable. All the 802.11 timings in play (5/9/20 us slots, 16 us SIFS)
/// are integral in nanoseconds.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_ns(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_us(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        assert!(secs >= 0.0 && secs.is_finite(), "invalid duration {secs}");
        SimTime((secs * 1e9).round() as u64)
    }

    pub const fn as_ns(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

/// A dispatched event. `seq` is the insertion counter used as tiebreaker.
#[derive(Debug, Clone)]
pub struct Event<K> {
    pub time: SimTime,
    pub seq: u64,
    pub node_id: usize,
    pub kind: K,
}

/// Permits cancelling a scheduled event before it fires. Cancelling an
/// already-dispatched handle is a no-op.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventHandle(u64);

#[derive(Debug)]
struct Entry<K> {
    time: SimTime,
    seq: u64,
    node_id: usize,
    kind: K,
}

impl<K> PartialEq for Entry<K> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}
impl<K> Eq for Entry<K> {}
impl<K> PartialOrd for Entry<K> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<K> Ord for Entry<K> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

/// Raised by [`EventQueue::run_until`] when the dispatch count exceeds the
/// configured safety cap (an event storm, usually a runaway retry loop).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventCapExceeded {
    pub cap: u64,
}

/// The kernel: event queue plus clock.
#[derive(Debug)]
pub struct EventQueue<K> {
    heap: BinaryHeap<Reverse<Entry<K>>>,
    cancelled: HashSet<u64>,
    next_seq: u64,
    now: SimTime,
    dispatched: u64,
    cap: u64,
}

impl<K> Default for EventQueue<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K> EventQueue<K> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            next_seq: 0,
            now: SimTime::ZERO,
            dispatched: 0,
            cap: u64::MAX,
        }
    }

    /// Abort `run_until` once more than `cap` events have been dispatched
    /// over the queue's lifetime.
    pub fn set_event_cap(&mut self, cap: u64) {
        self.cap = cap;
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Enqueue an event. Scheduling in the past is a programming error and
    /// halts the run with a diagnostic.
    pub fn schedule(&mut self, time: SimTime, node_id: usize, kind: K) -> EventHandle {
        assert!(
            time >= self.now,
            "scheduled event at {} ns before clock {} ns",
            time.as_ns(),
            self.now.as_ns()
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry {
            time,
            seq,
            node_id,
            kind,
        }));
        EventHandle(seq)
    }

    pub fn cancel(&mut self, handle: EventHandle) {
        self.cancelled.insert(handle.0);
    }

    fn pop_at_or_before(&mut self, horizon: SimTime) -> Option<Event<K>> {
        while let Some(Reverse(entry)) = self.heap.peek() {
            if entry.time > horizon {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked entry");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            return Some(Event {
                time: entry.time,
                seq: entry.seq,
                node_id: entry.node_id,
                kind: entry.kind,
            });
        }
        None
    }

    /// Dispatch every event with `time <= horizon` through `handler`, then
    /// advance the clock to `horizon`. The handler may schedule further
    /// events; those within the horizon are honored in the same run. Returns
    /// the number of events dispatched by this call.
    pub fn run_until<F>(
        &mut self,
        horizon: SimTime,
        mut handler: F,
    ) -> Result<u64, EventCapExceeded>
    where
        F: FnMut(&mut Self, Event<K>),
    {
        assert!(
            horizon >= self.now,
            "horizon {} ns before clock {} ns",
            horizon.as_ns(),
            self.now.as_ns()
        );
        let mut count = 0u64;
        while let Some(event) = self.pop_at_or_before(horizon) {
            self.now = event.time;
            self.dispatched += 1;
            count += 1;
            if self.dispatched > self.cap {
                return Err(EventCapExceeded { cap: self.cap });
            }
            handler(self, event);
        }
        self.now = horizon;
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn drain(queue: &mut EventQueue<u32>, horizon: SimTime) -> Vec<(u64, u32)> {
        let mut seen = Vec::new();
        queue
            .run_until(horizon, |_, ev| seen.push((ev.time.as_ns(), ev.kind)))
            .unwrap();
        seen
    }

    #[test]
    fn dispatch_order_is_time_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(100), 0, 1);
        q.schedule(SimTime::from_ns(50), 0, 2);
        assert_eq!(
            drain(&mut q, SimTime::from_us(1)),
            vec![(50, 2), (100, 1)]
        );
    }

    #[test]
    fn equal_times_dispatch_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(100), 0, 10); // A
        q.schedule(SimTime::from_ns(100), 1, 20); // B
        assert_eq!(
            drain(&mut q, SimTime::from_us(1)),
            vec![(100, 10), (100, 20)]
        );
    }

    #[test]
    fn cancelled_event_never_fires() {
        let mut q = EventQueue::new();
        let h = q.schedule(SimTime::from_ns(10), 0, 1);
        q.schedule(SimTime::from_ns(20), 0, 2);
        q.cancel(h);
        assert_eq!(drain(&mut q, SimTime::from_us(1)), vec![(20, 2)]);
    }

    #[test]
    fn empty_queue_advances_clock_to_horizon() {
        let mut q = EventQueue::<u32>::new();
        let n = q.run_until(SimTime::from_secs_f64(1.0), |_, _| {}).unwrap();
        assert_eq!(n, 0);
        assert_eq!(q.now(), SimTime::from_secs_f64(1.0));
    }

    #[test]
    fn events_beyond_horizon_stay_queued() {
        let mut q = EventQueue::new();
        for t in [10u64, 20, 30] {
            q.schedule(SimTime::from_ns(t), 0, t as u32);
        }
        q.schedule(SimTime::from_ns(500), 0, 500);
        let n = q.run_until(SimTime::from_ns(100), |_, _| {}).unwrap();
        assert_eq!(n, 3);
        assert_eq!(q.now(), SimTime::from_ns(100));
        // the late event fires on the next run
        assert_eq!(drain(&mut q, SimTime::from_ns(500)), vec![(500, 500)]);
    }

    #[test]
    fn reentrant_scheduling_within_horizon_is_honored() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(10), 0, 1);
        let mut seen = Vec::new();
        q.run_until(SimTime::from_ns(100), |q, ev| {
            seen.push(ev.kind);
            if ev.kind == 1 {
                q.schedule(SimTime::from_ns(50), 0, 2);
                q.schedule(SimTime::from_ns(200), 0, 3); // beyond horizon
            }
        })
        .unwrap();
        assert_eq!(seen, vec![1, 2]);
    }

    #[test]
    #[should_panic(expected = "before clock")]
    fn scheduling_in_the_past_panics() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_ns(10), 0, 1);
        q.run_until(SimTime::from_ns(10), |_, _| {}).unwrap();
        q.schedule(SimTime::from_ns(5), 0, 2);
    }

    #[test]
    fn event_cap_aborts_the_run() {
        let mut q = EventQueue::new();
        q.set_event_cap(10);
        q.schedule(SimTime::from_ns(1), 0, 0u32);
        let result = q.run_until(SimTime::from_secs_f64(1.0), |q, ev| {
            q.schedule(ev.time + SimTime::from_ns(1), 0, 0u32);
        });
        assert_eq!(result, Err(EventCapExceeded { cap: 10 }));
    }

    proptest! {
        /// For any randomized insertion sequence, dispatch order is a stable
        /// sort by (time, seq).
        #[test]
        fn dispatch_is_stable_sort(times in proptest::collection::vec(0u64..1_000, 1..200)) {
            let mut q = EventQueue::new();
            for (i, &t) in times.iter().enumerate() {
                q.schedule(SimTime::from_ns(t), 0, i);
            }
            let mut seen = Vec::new();
            q.run_until(SimTime::from_us(1), |_, ev| seen.push((ev.time.as_ns(), ev.kind))).unwrap();

            let mut expected: Vec<(u64, usize)> =
                times.iter().enumerate().map(|(i, &t)| (t, i)).collect();
            expected.sort_by_key(|&(t, i)| (t, i));
            prop_assert_eq!(seen, expected);
        }

        /// Replaying the same schedule yields an identical trace.
        #[test]
        fn replay_is_bit_identical(times in proptest::collection::vec(0u64..1_000, 1..100)) {
            let run = |times: &[u64]| {
                let mut q = EventQueue::new();
                for (i, &t) in times.iter().enumerate() {
                    q.schedule(SimTime::from_ns(t), i % 7, i);
                }
                let mut trace = Vec::new();
                q.run_until(SimTime::from_us(1), |_, ev| {
                    trace.push((ev.time.as_ns(), ev.seq, ev.node_id, ev.kind));
                }).unwrap();
                trace
            };
            prop_assert_eq!(run(&times), run(&times));
        }
    }
}
