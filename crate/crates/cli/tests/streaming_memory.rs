//! Peak memory of `otalc clean` must not grow with the stream length. Kept in
//! its own test binary so that `RUSAGE_CHILDREN` only sees this child.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Command, Stdio};
use std::thread;

fn children_max_rss_kib() -> i64 {
    let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
    // SAFETY: getrusage writes a full rusage struct into the provided pointer.
    let rc = unsafe { libc::getrusage(libc::RUSAGE_CHILDREN, usage.as_mut_ptr()) };
    assert_eq!(rc, 0);
    // SAFETY: initialised by the successful call above.
    unsafe { usage.assume_init() }.ru_maxrss
}

/// Pipes `frames` labels through the cleaner and returns (events, max RSS in KiB).
fn pipe_stream(frames: usize) -> (usize, i64) {
    let dir = tempfile::tempdir().unwrap();
    let mapping = dir.path().join("mapping.txt");
    fs::write(&mapping, "0 A\n1 B\n2 C\n").unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_otalc"))
        .args(["clean", "--mapping", mapping.to_str().unwrap(), "--cutoff", "static:9", "--b", "2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();

    let stdin = child.stdin.take().unwrap();
    let writer = thread::spawn(move || {
        let mut w = BufWriter::with_capacity(1 << 16, stdin);
        let names = ["A\n", "B\n", "C\n"];
        for t in 0..frames {
            // 40-frame segments with a 2-frame blip inside each
            let seg = t / 40;
            let label = if t % 40 == 17 || t % 40 == 18 { (seg + 1) % 3 } else { seg % 3 };
            w.write_all(names[label].as_bytes()).unwrap();
        }
        w.flush().unwrap();
    });
    let reader = BufReader::new(child.stdout.take().unwrap());
    let events = reader.lines().map(|l| l.unwrap()).filter(|l| l.starts_with('A')).count();
    writer.join().unwrap();
    assert!(child.wait().unwrap().success());
    (events, children_max_rss_kib())
}

// Any per-frame history (raw or tidy, 8 bytes per frame each) would add at
// least 16 MiB at 2*10^6 frames; a bounded cleaner stays near its startup size.
#[test]
fn clean_memory_is_bounded() {
    let frames = 2_000_000;
    let (appends, rss_kib) = pipe_stream(frames);
    assert_eq!(appends, frames);
    println!("max RSS {rss_kib} KiB for {frames} frames");
    assert!(rss_kib < 16 * 1024, "max RSS {rss_kib} KiB");
}

#[test]
#[ignore = "pipes 10^7 frames; run with --ignored"]
fn clean_memory_is_bounded_ten_million() {
    let frames = 10_000_000;
    let (appends, rss_kib) = pipe_stream(frames);
    assert_eq!(appends, frames);
    println!("max RSS {rss_kib} KiB for {frames} frames");
    assert!(rss_kib < 16 * 1024, "max RSS {rss_kib} KiB");
}
