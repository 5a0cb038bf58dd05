//! The I/O scheduler: request planning, multi-stream execution, prefetch.
//!
//! Page reads are planned in three steps: sort ranges by offset, coalesce
//! neighbors whose gap is at most `gap_threshold`, then split every run into
//! byte-granular chunks of at most `max_request_bytes`. Splitting at byte
//! granularity keeps request counts and sizes exact; a page spanning a chunk
//! boundary is reassembled from consecutive chunks on extraction.
//!
//! Execution primes a submission window of `stream_count` requests before
//! any worker starts, io_uring style, and refills it one-for-one on each
//! completion. The peak number of in-flight requests is therefore exactly
//! `min(stream_count, requests)`, and results are byte-identical for every
//! stream count. The first failure wins (lowest request index), pending
//! requests are cancelled, and the error is returned.
//!
//! The cluster pool runs one background thread per reader. A prefetch job
//! loads every page of the named columns for one cluster into the page pool
//! as background traffic; a failure is latched and rethrown on the next
//! foreground access to that cluster.

use std::collections::{HashMap, VecDeque};
use std::sync::mpsc;
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use crate::error::{Error, Result};
use crate::format::{ByteRange, Footer, PageLocator};
use crate::pages::{unpack_page, PagePool};
use crate::schema::Schema;
use crate::storage::{FileSource, IoClass};

/// Tunables for the read scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerConfig {
    /// Coalesce two ranges when the hole between them is at most this.
    pub gap_threshold: u64,
    /// Upper bound on a single device request.
    pub max_request_bytes: u64,
    /// Concurrent request streams.
    pub stream_count: usize,
    /// Clusters to prefetch ahead of a forward scan.
    pub readahead_clusters: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig {
            gap_threshold: 16 << 10,
            max_request_bytes: 8 << 20,
            stream_count: 1,
            readahead_clusters: 1,
        }
    }
}

impl SchedulerConfig {
    fn validate(&self) -> Result<()> {
        if self.max_request_bytes == 0 {
            return Err(Error::Usage("max_request_bytes must be positive".into()));
        }
        if self.stream_count == 0 {
            return Err(Error::Usage("stream_count must be positive".into()));
        }
        Ok(())
    }
}

/// One contiguous device read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadRequest {
    pub offset: u64,
    pub length: u64,
}

impl ReadRequest {
    pub fn end(&self) -> u64 {
        self.offset + self.length
    }
}

/// The planned requests for a set of page ranges, with enough bookkeeping to
/// hand each input range its bytes back after execution.
#[derive(Debug, Clone)]
pub struct ReadPlan {
    pub requests: Vec<ReadRequest>,
    /// Input ranges, in input order.
    ranges: Vec<(u64, u64)>,
}

impl ReadPlan {
    pub fn total_bytes(&self) -> u64 {
        self.requests.iter().map(|r| r.length).sum()
    }

    /// Bytes of input range `index`, reassembled from the request buffers.
    /// `buffers[i]` must be the result of `requests[i]`.
    pub fn extract(&self, buffers: &[Vec<u8>], index: usize) -> Vec<u8> {
        let (offset, length) = self.ranges[index];
        let mut out = Vec::with_capacity(length as usize);
        // First request whose end lies past the range start.
        let mut req = self.requests.partition_point(|r| r.end() <= offset);
        let mut at = offset;
        let end = offset + length;
        while at < end {
            let r = &self.requests[req];
            debug_assert!(r.offset <= at && at < r.end(), "plan covers every input byte");
            let take_to = end.min(r.end());
            let from = (at - r.offset) as usize;
            let to = (take_to - r.offset) as usize;
            out.extend_from_slice(&buffers[req][from..to]);
            at = take_to;
            req += 1;
        }
        out
    }
}

/// Plans device requests for a set of stored ranges.
pub fn plan_requests(ranges: &[ByteRange], config: &SchedulerConfig) -> Result<ReadPlan> {
    config.validate()?;
    let inputs: Vec<(u64, u64)> = ranges
        .iter()
        .map(|r| (r.offset, r.compressed_size as u64))
        .collect();

    // Coalesce in offset order, deduplicating identical ranges.
    let mut sorted: Vec<(u64, u64)> = inputs.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let mut runs: Vec<(u64, u64)> = Vec::new(); // (start, end)
    for (offset, length) in sorted {
        let end = offset + length;
        match runs.last_mut() {
            Some((_, run_end)) if offset <= *run_end + config.gap_threshold => {
                *run_end = (*run_end).max(end);
            }
            _ => runs.push((offset, end)),
        }
    }

    // Byte-granular split: ceil(run/max) chunks, all but the last full-size.
    let mut requests = Vec::new();
    for (start, end) in runs {
        let mut at = start;
        while at < end {
            let length = config.max_request_bytes.min(end - at);
            requests.push(ReadRequest { offset: at, length });
            at += length;
        }
    }
    Ok(ReadPlan { requests, ranges: inputs })
}

/// Peak concurrency gauge for one execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamMetrics {
    pub peak_in_flight: usize,
}

struct ExecState {
    queue: VecDeque<usize>,
    next_unsubmitted: usize,
    in_flight: usize,
    peak: usize,
    results: Vec<Option<Vec<u8>>>,
    error: Option<(usize, Error)>,
    started: bool,
}

/// Executes planned requests over `streams` concurrent workers.
///
/// Results are indexed like the requests, independent of completion order.
/// On failure the lowest-indexed error is returned and the backlog dropped.
pub fn execute_streams(
    source: &FileSource,
    requests: &[ReadRequest],
    streams: usize,
    class: IoClass,
) -> Result<(Vec<Vec<u8>>, StreamMetrics)> {
    if streams == 0 {
        return Err(Error::Usage("stream_count must be positive".into()));
    }
    let n = requests.len();
    if n == 0 {
        return Ok((Vec::new(), StreamMetrics { peak_in_flight: 0 }));
    }
    let workers = streams.min(n);
    let state = Mutex::new(ExecState {
        queue: VecDeque::new(),
        next_unsubmitted: 0,
        in_flight: 0,
        peak: 0,
        results: (0..n).map(|_| None).collect(),
        error: None,
        started: false,
    });
    let cv = Condvar::new();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut guard = state.lock().unwrap();
                loop {
                    while !guard.started {
                        guard = cv.wait(guard).unwrap();
                    }
                    if guard.error.is_some() {
                        return;
                    }
                    let Some(i) = guard.queue.pop_front() else {
                        if guard.next_unsubmitted >= n {
                            return;
                        }
                        guard = cv.wait(guard).unwrap();
                        continue;
                    };
                    drop(guard);
                    let req = requests[i];
                    let outcome = source.read_range(req.offset, req.length as usize, class);
                    guard = state.lock().unwrap();
                    guard.in_flight -= 1;
                    match outcome {
                        Ok(buf) => {
                            guard.results[i] = Some(buf);
                            if guard.error.is_none() && guard.next_unsubmitted < n {
                                let next = guard.next_unsubmitted;
                                guard.queue.push_back(next);
                                guard.next_unsubmitted += 1;
                                guard.in_flight += 1;
                                guard.peak = guard.peak.max(guard.in_flight);
                            }
                        }
                        Err(e) => {
                            let replace = guard.error.as_ref().map_or(true, |(j, _)| i < *j);
                            if replace {
                                guard.error = Some((i, e));
                            }
                            guard.queue.clear();
                        }
                    }
                    cv.notify_all();
                }
            });
        }

        // Prime the submission window before any worker proceeds, so peak
        // concurrency is exactly the window size.
        let mut guard = state.lock().unwrap();
        let window = workers;
        for i in 0..window {
            guard.queue.push_back(i);
        }
        guard.next_unsubmitted = window;
        guard.in_flight = window;
        guard.peak = window;
        guard.started = true;
        drop(guard);
        cv.notify_all();
    });

    let mut final_state = state.into_inner().unwrap();
    if let Some((index, error)) = final_state.error.take() {
        return Err(Error::corruption_caused(
            format!(
                "request {index} of {n} (offset {}, {} bytes) failed",
                requests[index].offset, requests[index].length
            ),
            error,
        ));
    }
    let results = final_state
        .results
        .into_iter()
        .map(|r| r.expect("every request completed"))
        .collect();
    Ok((results, StreamMetrics { peak_in_flight: final_state.peak }))
}

/// Loads, decompresses, and unpacks a page set in one planned pass.
///
/// `pages` pairs each locator with its column, physical type, and first
/// element; every unpacked page is inserted into the pool.
pub fn load_pages(
    source: &FileSource,
    pool: &Arc<PagePool>,
    cluster: u32,
    schema: &Schema,
    pages: &[(u32, u64, PageLocator)],
    config: &SchedulerConfig,
    class: IoClass,
) -> Result<StreamMetrics> {
    let ranges: Vec<ByteRange> = pages.iter().map(|(_, _, loc)| loc.range).collect();
    let plan = plan_requests(&ranges, config)?;
    let (buffers, metrics) = execute_streams(source, &plan.requests, config.stream_count, class)?;
    for (i, (column, first_element, locator)) in pages.iter().enumerate() {
        let stored = plan.extract(&buffers, i);
        let codec = crate::storage::CompressionCodec::from_id(locator.range.codec_id)
            .ok_or_else(|| Error::Format {
                offset: locator.range.offset,
                reason: format!("unknown codec id {}", locator.range.codec_id),
            })?;
        let packed =
            crate::storage::decompress(codec, &stored, locator.range.uncompressed_size as usize)?;
        let page = unpack_page(
            &packed,
            *column,
            schema.column(*column).physical_type,
            *first_element,
            locator.elements as u64,
        )?;
        pool.insert(cluster, page);
    }
    Ok(metrics)
}

enum LoadState {
    Loading,
    Ready,
    Failed { message: String, original: Option<Box<Error>> },
}

/// Latched load status of one cluster.
pub struct ClusterState {
    cluster: u32,
    inner: Mutex<LoadState>,
    cv: Condvar,
}

impl ClusterState {
    fn finish(&self, outcome: Result<()>) {
        let mut guard = self.inner.lock().unwrap();
        *guard = match outcome {
            Ok(()) => LoadState::Ready,
            Err(e) => LoadState::Failed { message: e.to_string(), original: Some(Box::new(e)) },
        };
        self.cv.notify_all();
    }

    /// Blocks until the load settles. A latched failure is rethrown with the
    /// original error as cause; later waiters get its rendered message.
    pub fn wait(&self) -> Result<()> {
        let mut guard = self.inner.lock().unwrap();
        loop {
            match &mut *guard {
                LoadState::Loading => guard = self.cv.wait(guard).unwrap(),
                LoadState::Ready => return Ok(()),
                LoadState::Failed { message, original } => {
                    let context =
                        format!("background load of cluster {} failed", self.cluster);
                    return Err(match original.take() {
                        Some(cause) => Error::corruption_caused(context, *cause),
                        None => Error::corruption(format!("{context}: {message}")),
                    });
                }
            }
        }
    }
}

/// Completion handle for one prefetch.
#[derive(Clone)]
pub struct PrefetchHandle(Arc<ClusterState>);

impl PrefetchHandle {
    pub fn wait(&self) -> Result<()> {
        self.0.wait()
    }
}

struct PoolShared {
    source: Arc<FileSource>,
    schema: Arc<Schema>,
    footer: Arc<Footer>,
    pages: Arc<PagePool>,
    config: SchedulerConfig,
    states: Mutex<HashMap<u32, Arc<ClusterState>>>,
}

impl PoolShared {
    /// Locators with first-element indices for `columns` of one cluster.
    fn gather(&self, cluster: u32, columns: &[u32]) -> Vec<(u32, u64, PageLocator)> {
        let descriptor = &self.footer.clusters[cluster as usize];
        let mut out = Vec::new();
        for &column in columns {
            if let Some(col) = descriptor.column(column) {
                for (first, page) in col.runs() {
                    out.push((column, first, *page));
                }
            }
        }
        out
    }

    fn load(&self, cluster: u32, columns: &[u32], class: IoClass) -> Result<()> {
        let pages = self.gather(cluster, columns);
        load_pages(
            &self.source,
            &self.pages,
            cluster,
            &self.schema,
            &pages,
            &self.config,
            class,
        )?;
        Ok(())
    }
}

/// Read-ahead machinery for one reader: one background worker that loads
/// whole clusters into the page pool as background I/O.
pub struct ClusterPool {
    shared: Arc<PoolShared>,
    jobs: Option<mpsc::Sender<(u32, Vec<u32>)>>,
    worker: Option<JoinHandle<()>>,
}

impl ClusterPool {
    pub fn new(
        source: Arc<FileSource>,
        schema: Arc<Schema>,
        footer: Arc<Footer>,
        pages: Arc<PagePool>,
        config: SchedulerConfig,
    ) -> ClusterPool {
        let shared = Arc::new(PoolShared {
            source,
            schema,
            footer,
            pages,
            config,
            states: Mutex::new(HashMap::new()),
        });
        let (tx, rx) = mpsc::channel::<(u32, Vec<u32>)>();
        let worker_shared = Arc::clone(&shared);
        let worker = std::thread::spawn(move || {
            while let Ok((cluster, columns)) = rx.recv() {
                let state = {
                    let states = worker_shared.states.lock().unwrap();
                    states.get(&cluster).cloned()
                };
                let Some(state) = state else { continue };
                let outcome = worker_shared.load(cluster, &columns, IoClass::Background);
                state.finish(outcome);
            }
        });
        ClusterPool { shared, jobs: Some(tx), worker: Some(worker) }
    }

    pub fn cluster_count(&self) -> u32 {
        self.shared.footer.clusters.len() as u32
    }

    /// Queues a background load unless the cluster is already known.
    /// Idempotent: repeated calls return the existing handle.
    pub fn prefetch(&self, cluster: u32, columns: &[u32]) -> PrefetchHandle {
        debug_assert!((cluster as usize) < self.shared.footer.clusters.len());
        let mut states = self.shared.states.lock().unwrap();
        if let Some(state) = states.get(&cluster) {
            return PrefetchHandle(Arc::clone(state));
        }
        let state = Arc::new(ClusterState {
            cluster,
            inner: Mutex::new(LoadState::Loading),
            cv: Condvar::new(),
        });
        states.insert(cluster, Arc::clone(&state));
        drop(states);
        if let Some(jobs) = &self.jobs {
            // A send failure means the worker is gone; latch it as a failure.
            if jobs.send((cluster, columns.to_vec())).is_err() {
                state.finish(Err(Error::corruption("prefetch worker stopped")));
            }
        }
        PrefetchHandle(Arc::clone(&state))
    }

    /// Makes a cluster resident for `columns`, blocking as foreground work
    /// when no prefetch has been queued; otherwise waits on the prefetch.
    /// A latched background failure surfaces here.
    pub fn ensure(&self, cluster: u32, columns: &[u32]) -> Result<()> {
        let existing = {
            let states = self.shared.states.lock().unwrap();
            states.get(&cluster).cloned()
        };
        if let Some(state) = existing {
            return state.wait();
        }
        let state = Arc::new(ClusterState {
            cluster,
            inner: Mutex::new(LoadState::Loading),
            cv: Condvar::new(),
        });
        {
            let mut states = self.shared.states.lock().unwrap();
            if let Some(racing) = states.get(&cluster) {
                let racing = Arc::clone(racing);
                drop(states);
                return racing.wait();
            }
            states.insert(cluster, Arc::clone(&state));
        }
        let outcome = self.shared.load(cluster, columns, IoClass::Foreground);
        let report = match &outcome {
            Ok(()) => Ok(()),
            Err(e) => Err(Error::corruption(format!(
                "foreground load of cluster {cluster} failed: {e}"
            ))),
        };
        state.finish(outcome);
        report
    }
}

impl Drop for ClusterPool {
    fn drop(&mut self) {
        self.jobs.take();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn range(offset: u64, size: u32) -> ByteRange {
        ByteRange { offset, compressed_size: size, uncompressed_size: size, codec_id: 0 }
    }

    fn config(gap: u64, max: u64) -> SchedulerConfig {
        SchedulerConfig { gap_threshold: gap, max_request_bytes: max, ..Default::default() }
    }

    #[test]
    fn adjacent_pages_coalesce_to_one_request() {
        let plan =
            plan_requests(&[range(100, 50), range(150, 70)], &config(0, u64::MAX)).unwrap();
        assert_eq!(plan.requests, vec![ReadRequest { offset: 100, length: 120 }]);
    }

    #[test]
    fn far_apart_pages_stay_separate_at_gap_zero() {
        let ranges: Vec<ByteRange> = (0..5).map(|i| range(i * 10_000, 100)).collect();
        let plan = plan_requests(&ranges, &config(0, u64::MAX)).unwrap();
        assert_eq!(plan.requests.len(), 5);
    }

    #[test]
    fn gap_threshold_is_inclusive() {
        let ranges = [range(0, 100), range(116, 100)];
        let merged = plan_requests(&ranges, &config(16, u64::MAX)).unwrap();
        assert_eq!(merged.requests, vec![ReadRequest { offset: 0, length: 216 }]);
        let split = plan_requests(&ranges, &config(15, u64::MAX)).unwrap();
        assert_eq!(split.requests.len(), 2);
    }

    #[test]
    fn runs_split_into_ceil_chunks_of_max() {
        // 20 MiB contiguous, 8 MiB cap: three requests of 8, 8, 4 MiB.
        let mib = 1u64 << 20;
        let ranges: Vec<ByteRange> =
            (0..20).map(|i| range(i * mib, mib as u32)).collect();
        let plan = plan_requests(&ranges, &config(0, 8 * mib)).unwrap();
        let lengths: Vec<u64> = plan.requests.iter().map(|r| r.length).collect();
        assert_eq!(lengths, vec![8 * mib, 8 * mib, 4 * mib]);
        assert_eq!(plan.requests.len(), (20 * mib).div_ceil(8 * mib) as usize);
    }

    #[test]
    fn unsorted_input_with_duplicates_plans_clean() {
        let ranges = [range(500, 100), range(0, 100), range(500, 100), range(90, 50)];
        let plan = plan_requests(&ranges, &config(0, u64::MAX)).unwrap();
        // [0,140) from overlap-merge of [0,100)+[90,140), then [500,600).
        assert_eq!(
            plan.requests,
            vec![
                ReadRequest { offset: 0, length: 140 },
                ReadRequest { offset: 500, length: 100 },
            ]
        );
    }

    #[test]
    fn extraction_recovers_every_input_range() {
        // Synthetic file bytes: position p holds (p % 251) as u8.
        let synth = |offset: u64, len: u64| -> Vec<u8> {
            (offset..offset + len).map(|p| (p % 251) as u8).collect()
        };
        let ranges = [
            range(10, 100),
            range(110, 300),   // adjacent to the first
            range(1000, 50),
            range(40, 20),     // nested inside the first
            range(5000, 4096),
        ];
        for (gap, max) in [(0u64, u64::MAX), (16, 128), (1 << 20, 97), (0, 1)] {
            let plan = plan_requests(&ranges, &config(gap, max)).unwrap();
            for r in &plan.requests {
                assert!(r.length <= max);
            }
            for pair in plan.requests.windows(2) {
                assert!(pair[0].end() <= pair[1].offset, "requests sorted and disjoint");
            }
            let buffers: Vec<Vec<u8>> =
                plan.requests.iter().map(|r| synth(r.offset, r.length)).collect();
            for (i, r) in ranges.iter().enumerate() {
                assert_eq!(
                    plan.extract(&buffers, i),
                    synth(r.offset, r.compressed_size as u64),
                    "range {i} under gap={gap} max={max}"
                );
            }
        }
    }

    #[test]
    fn empty_plan_is_empty() {
        let plan = plan_requests(&[], &SchedulerConfig::default()).unwrap();
        assert!(plan.requests.is_empty());
        assert_eq!(plan.total_bytes(), 0);
    }

    mod exec {
        use super::*;
        use crate::storage::{ContainerSource, ContainerTarget, FileSink};

        /// A real file with enough synthetic bytes to read against.
        fn sample_source(len: usize) -> (tempfile::TempDir, FileSource) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("exec.grb");
            let mut sink = FileSink::create(&ContainerTarget::BareFile(path.clone())).unwrap();
            let bytes: Vec<u8> = (0..len).map(|p| (p % 251) as u8).collect();
            sink.append_raw(&bytes).unwrap();
            drop(sink);
            let source = FileSource::open(&ContainerSource::BareFile(path)).unwrap();
            (dir, source)
        }

        #[test]
        fn results_identical_for_every_stream_count() {
            let (_dir, source) = sample_source(1 << 16);
            let requests: Vec<ReadRequest> = (0..24)
                .map(|i| ReadRequest { offset: 61 * i + 50, length: 101 })
                .collect();
            let (baseline, m1) =
                execute_streams(&source, &requests, 1, IoClass::Foreground).unwrap();
            assert_eq!(m1.peak_in_flight, 1);
            for streams in [2, 3, 7, 16, 64] {
                let (got, _) =
                    execute_streams(&source, &requests, streams, IoClass::Foreground).unwrap();
                assert_eq!(got, baseline, "streams={streams}");
            }
        }

        #[test]
        fn peak_in_flight_is_streams_when_backlogged() {
            let (_dir, source) = sample_source(1 << 16);
            let requests: Vec<ReadRequest> = (0..32)
                .map(|i| ReadRequest { offset: 64 * i, length: 64 })
                .collect();
            let (_, metrics) =
                execute_streams(&source, &requests, 16, IoClass::Foreground).unwrap();
            assert_eq!(metrics.peak_in_flight, 16);
        }

        #[test]
        fn peak_in_flight_caps_at_backlog() {
            let (_dir, source) = sample_source(1 << 12);
            let requests = [
                ReadRequest { offset: 0, length: 64 },
                ReadRequest { offset: 128, length: 64 },
            ];
            let (_, metrics) =
                execute_streams(&source, &requests, 16, IoClass::Foreground).unwrap();
            assert_eq!(metrics.peak_in_flight, 2);
        }

        #[test]
        fn first_failure_cancels_the_rest() {
            let (_dir, source) = sample_source(1 << 12);
            let mut requests: Vec<ReadRequest> = (0..8)
                .map(|i| ReadRequest { offset: 64 * i, length: 64 })
                .collect();
            requests[3] = ReadRequest { offset: 1 << 30, length: 64 }; // past the region
            let err = execute_streams(&source, &requests, 2, IoClass::Foreground).unwrap_err();
            assert!(err.to_string().contains("request 3 of 8"));
            let stats = source.stats();
            assert!(stats.fg_requests < 8, "backlog cancelled, not drained");
        }
    }
}
