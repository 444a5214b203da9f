//! End-to-end spool behaviour under fault schedules, restarts, and an HTTP
//! sink test double. Backoffs are accelerated to keep the file fast.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use edgebench_core::spool::{
    sink_object_name, DirectorySink, Sink, SinkConfig, SinkError, SinkKind, SpoolState, Spooler,
    SpoolerConfig, DIGEST_HEADER,
};
use sha2::{Digest, Sha256};

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fast_config(root: &Path, max_attempts: u32) -> SpoolerConfig {
    let mut sink = SinkConfig::directory(root.join("sink").display().to_string());
    sink.retry.max_attempts = max_attempts;
    sink.retry.base_backoff = Duration::from_millis(5);
    sink.retain_after_ack = Duration::ZERO;
    let mut config = SpoolerConfig::new(
        root.join("inbox"),
        root.join("journal.ndjson"),
        sink,
    );
    config.scan_interval = Duration::from_millis(20);
    config.stability_interval = Duration::from_millis(30);
    config
}

fn drop_file(inbox: &Path, name: &str, content: &[u8]) -> PathBuf {
    std::fs::create_dir_all(inbox).unwrap();
    // write-then-rename, the atomic placement convention
    let tmp = inbox.join(format!("{name}.tmp"));
    std::fs::write(&tmp, content).unwrap();
    let dest = inbox.join(name);
    std::fs::rename(&tmp, &dest).unwrap();
    dest
}

/// Directory sink that fails the first `fail_first` deliveries of each
/// object, counting attempts per object name.
struct FlakySink {
    inner: DirectorySink,
    fail_first: u32,
    attempts: HashMap<String, u32>,
}

impl FlakySink {
    fn new(target: &Path, fail_first: u32) -> FlakySink {
        FlakySink {
            inner: DirectorySink::new(target),
            fail_first,
            attempts: HashMap::new(),
        }
    }
}

impl Sink for FlakySink {
    fn deliver(&mut self, source: &Path, checksum: &str) -> Result<(), SinkError> {
        let key = sink_object_name(source, checksum);
        let n = self.attempts.entry(key).or_insert(0);
        *n += 1;
        if *n <= self.fail_first {
            return Err(SinkError::SinkUnreachable("injected fault".into()));
        }
        self.inner.deliver(source, checksum)
    }

    fn describe(&self) -> String {
        format!("flaky({}) {}", self.fail_first, self.inner.describe())
    }
}

#[test]
fn five_files_reach_the_sink_and_sources_retire() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path(), 8);
    let inbox = config.inbox.clone();
    let sink_dir = dir.path().join("sink");

    let mut contents = Vec::new();
    for i in 0..5 {
        let body = format!("sensor data {i}").into_bytes();
        drop_file(&inbox, &format!("f{i}.tdms"), &body);
        contents.push(body);
    }

    let mut spooler = Spooler::open(config).unwrap();
    let summary = spooler.drain().unwrap();

    assert_eq!(summary.acked, 5);
    assert_eq!(summary.failed, 0);
    assert_eq!(summary.sources_deleted, 5);

    let sink_files: Vec<_> = std::fs::read_dir(&sink_dir).unwrap().collect();
    assert_eq!(sink_files.len(), 5);
    for (i, body) in contents.iter().enumerate() {
        let name = sink_object_name(Path::new(&format!("f{i}.tdms")), &sha256_hex(body));
        let copied = std::fs::read(sink_dir.join(&name)).unwrap();
        assert_eq!(&copied, body, "{name} corrupted");
    }
    // inbox emptied by retention, nothing else written into it
    assert_eq!(std::fs::read_dir(&inbox).unwrap().count(), 0);
}

#[test]
fn enqueue_is_idempotent_per_path_and_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path(), 8);
    let inbox = config.inbox.clone();
    let path = drop_file(&inbox, "same.tdms", b"abcd");

    let mut spooler = Spooler::open(config).unwrap();
    let id1 = spooler.enqueue(&path).unwrap().id.clone();
    let id2 = spooler.enqueue(&path).unwrap().id.clone();
    assert_eq!(id1, id2);
    assert_eq!(spooler.entries().len(), 1);
    assert_eq!(spooler.summary().enqueued, 1);
}

#[test]
fn checksum_matches_an_independent_tool() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path(), 8);
    let inbox = config.inbox.clone();
    let path = drop_file(&inbox, "known.bin", b"abcd");

    let mut spooler = Spooler::open(config).unwrap();
    let entry = spooler.enqueue(&path).unwrap();
    // sha256sum of the literal bytes "abcd"
    assert_eq!(
        entry.checksum,
        "88d4266fd4e6338d13b845fcf289579d209c897823b9217da3e161936f031589"
    );
    assert_eq!(entry.size_bytes, 4);
}

#[test]
fn sink_failing_twice_then_succeeding_acks_on_third_attempt() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path(), 8);
    let inbox = config.inbox.clone();
    let sink_dir = dir.path().join("sink");
    drop_file(&inbox, "retry.tdms", b"retry me");

    let sink = Box::new(FlakySink::new(&sink_dir, 2));
    let mut spooler = Spooler::with_sink(config, sink).unwrap();
    let summary = spooler.drain().unwrap();

    assert_eq!(summary.acked, 1);
    let entry = spooler.entries().values().next().unwrap();
    assert_eq!(entry.state, SpoolState::Acked);
    assert_eq!(entry.attempts, 3);
    assert_eq!(std::fs::read_dir(&sink_dir).unwrap().count(), 1);
}

#[test]
fn sink_down_for_all_attempts_fails_and_retains_source() {
    let dir = tempfile::tempdir().unwrap();
    let config = fast_config(dir.path(), 4);
    let inbox = config.inbox.clone();
    let source = drop_file(&inbox, "doomed.tdms", b"precious");

    let sink = Box::new(FlakySink::new(&dir.path().join("sink"), u32::MAX));
    let mut spooler = Spooler::with_sink(config, sink).unwrap();
    let summary = spooler.drain().unwrap();

    assert_eq!(summary.failed, 1);
    let entry = spooler.entries().values().next().unwrap();
    assert_eq!(entry.state, SpoolState::Failed);
    assert_eq!(entry.attempts, 4);
    assert!(source.exists(), "failed source must never be deleted");
    assert_eq!(std::fs::read(&source).unwrap(), b"precious");
}

#[test]
fn restart_resumes_without_loss_or_duplication() {
    let dir = tempfile::tempdir().unwrap();
    let inbox = dir.path().join("inbox");
    let sink_dir = dir.path().join("sink");
    for i in 0..4 {
        drop_file(&inbox, &format!("r{i}.tdms"), format!("body {i}").as_bytes());
    }

    // first life: the sink is down; every entry cycles Pending->InFlight->Pending
    {
        let sink = Box::new(FlakySink::new(&sink_dir, u32::MAX));
        let mut spooler = Spooler::with_sink(fast_config(dir.path(), 100), sink).unwrap();
        std::thread::sleep(Duration::from_millis(60)); // let files stabilize
        spooler.tick().unwrap();
        std::thread::sleep(Duration::from_millis(60));
        spooler.tick().unwrap();
        let attempted: u32 = spooler.entries().values().map(|e| e.attempts).sum();
        assert!(attempted > 0, "first life never tried");
        assert_eq!(spooler.summary().acked, 0);
    } // process "dies"

    // second life: healthy sink, same journal
    let mut spooler = Spooler::open(fast_config(dir.path(), 100)).unwrap();
    assert_eq!(spooler.entries().len(), 4, "journal replay lost entries");
    let summary = spooler.drain().unwrap();
    assert_eq!(summary.acked, 4);
    assert_eq!(std::fs::read_dir(&sink_dir).unwrap().count(), 4, "duplicated sink objects");
}

#[test]
fn http_sink_round_trip_with_digest_echo() {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    // minimal PUT endpoint: stores nothing, echoes the digest header back
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let mut served = 0;
        while served < 2 {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let mut digest = String::new();
            let mut content_len = 0usize;
            loop {
                let mut header = String::new();
                reader.read_line(&mut header).unwrap();
                let header = header.trim_end().to_string();
                if header.is_empty() {
                    break;
                }
                let lower = header.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix(&format!("{DIGEST_HEADER}: ")) {
                    digest = v.to_string();
                }
                if let Some(v) = lower.strip_prefix("content-length: ") {
                    content_len = v.parse().unwrap_or(0);
                }
            }
            let mut body = vec![0u8; content_len];
            reader.read_exact(&mut body).unwrap();
            // second request deliberately echoes a wrong digest
            let echoed = if served == 0 { digest.clone() } else { "0".repeat(64) };
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\n{DIGEST_HEADER}: {echoed}\r\ncontent-length: 0\r\n\r\n"
            )
            .unwrap();
            served += 1;
        }
    });

    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("h.tdms");
    std::fs::write(&source, b"http body").unwrap();
    let checksum = sha256_hex(b"http body");

    let mut sink = edgebench_core::spool::HttpSink::new(format!("http://{addr}"));
    sink.deliver(&source, &checksum).unwrap();
    // wrong echo is a checksum mismatch, which the spooler retries
    assert!(matches!(
        sink.deliver(&source, &checksum),
        Err(SinkError::ChecksumMismatchAtSink { .. })
    ));
    server.join().unwrap();
}

#[test]
fn sink_config_selects_kind() {
    let dir_cfg = SinkConfig::directory("/tmp/x");
    assert_eq!(dir_cfg.kind, SinkKind::DirectoryCopy);
    assert!(dir_cfg.build().describe().starts_with("directory-copy"));

    let http_cfg = SinkConfig {
        kind: SinkKind::HttpPut,
        target: "http://localhost:1".into(),
        retry: Default::default(),
        retain_after_ack: Duration::ZERO,
    };
    assert!(http_cfg.build().describe().starts_with("http-put"));
}
