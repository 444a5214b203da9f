//! Per-item marker protocol on the workload's standard output.
//!
//! A workload brackets each batch item with two exact lines:
//!
//! ```text
//! EDGEOPS:ITEM:<decimal j>:START
//! EDGEOPS:ITEM:<decimal j>:END
//! ```
//!
//! Timestamps are assigned when the line is received. Anything that is not
//! a well-formed marker is ignored; unmatched or out-of-order markers become
//! warnings, never failures — measurement must survive workload chatter.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::clock::mono_now_ns;

const PREFIX: &str = "EDGEOPS:ITEM:";

/// One item's interval inside the Active window, with the peak RSS sample
/// observed inside it once the sample log is available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemMark {
    pub item_index: usize,
    pub start: u64,
    pub end: u64,
    pub peak_rss_bytes: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MarkerLog {
    pub marks: Vec<ItemMark>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkKind {
    Start,
    End,
}

/// Recognizes exactly `EDGEOPS:ITEM:<digits>:START|END`, nothing looser.
fn parse_marker_line(line: &str) -> Option<(usize, MarkKind)> {
    let rest = line.strip_prefix(PREFIX)?;
    let (digits, kind) = rest
        .strip_suffix(":START")
        .map(|d| (d, MarkKind::Start))
        .or_else(|| rest.strip_suffix(":END").map(|d| (d, MarkKind::End)))?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(|j| (j, kind))
}

/// Reads a stream to EOF, pairing markers by index. `on_line` observes every
/// line as received (the harness tees it to the captured stdout log).
pub fn parse_markers_with(
    reader: impl BufRead,
    mut on_line: impl FnMut(&str),
) -> MarkerLog {
    let mut log = MarkerLog::default();
    let mut open: Option<(usize, u64)> = None;

    for line in reader.lines() {
        let Ok(line) = line else { break };
        let received = mono_now_ns();
        on_line(&line);
        let Some((index, kind)) = parse_marker_line(&line) else {
            continue;
        };
        match kind {
            MarkKind::Start => {
                if let Some((o, _)) = open.replace((index, received)) {
                    log.warnings
                        .push(format!("item {o}: START without END, dropped"));
                }
            }
            MarkKind::End => match open {
                Some((o, started)) if o == index => {
                    log.marks.push(ItemMark {
                        item_index: index,
                        start: started,
                        end: received,
                        peak_rss_bytes: None,
                    });
                    open = None;
                }
                _ => {
                    log.warnings
                        .push(format!("item {index}: END without matching START, dropped"));
                }
            },
        }
    }
    if let Some((o, _)) = open {
        log.warnings
            .push(format!("item {o}: START without END, dropped"));
    }
    log
}

pub fn parse_markers(reader: impl BufRead) -> MarkerLog {
    parse_markers_with(reader, |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_well_formed_markers() {
        let stream = "EDGEOPS:ITEM:0:START\nEDGEOPS:ITEM:0:END\n\
                      EDGEOPS:ITEM:1:START\nEDGEOPS:ITEM:1:END\n\
                      EDGEOPS:ITEM:2:START\nEDGEOPS:ITEM:2:END\n";
        let log = parse_markers(stream.as_bytes());
        assert!(log.warnings.is_empty());
        let indices: Vec<usize> = log.marks.iter().map(|m| m.item_index).collect();
        assert_eq!(indices, vec![0, 1, 2]);
        for m in &log.marks {
            assert!(m.end >= m.start);
        }
        for pair in log.marks.windows(2) {
            assert!(pair[1].start >= pair[0].end, "marks overlap");
        }
    }

    #[test]
    fn unmatched_start_warns_and_drops() {
        let log = parse_markers("EDGEOPS:ITEM:5:START\n".as_bytes());
        assert!(log.marks.is_empty());
        assert_eq!(log.warnings.len(), 1);
        assert!(log.warnings[0].contains("item 5"));
    }

    #[test]
    fn stray_end_warns_and_drops() {
        let log = parse_markers("EDGEOPS:ITEM:3:END\n".as_bytes());
        assert!(log.marks.is_empty());
        assert_eq!(log.warnings.len(), 1);
    }

    #[test]
    fn chatter_between_markers_is_ignored() {
        let clean = "EDGEOPS:ITEM:0:START\nEDGEOPS:ITEM:0:END\n";
        let noisy = "loading model...\nEDGEOPS:ITEM:0:START\nprogress 50%\n\
                     EDGEOPS:ITEM:0:END\ndone\n";
        let a = parse_markers(clean.as_bytes());
        let b = parse_markers(noisy.as_bytes());
        assert_eq!(
            a.marks.iter().map(|m| m.item_index).collect::<Vec<_>>(),
            b.marks.iter().map(|m| m.item_index).collect::<Vec<_>>()
        );
        assert!(b.warnings.is_empty());
    }

    #[test]
    fn grammar_is_exact() {
        for bad in [
            "EDGEOPS:ITEM::START",
            "EDGEOPS:ITEM:+1:START",
            "EDGEOPS:ITEM:1:START ",
            " EDGEOPS:ITEM:1:START",
            "EDGEOPS:ITEM:1:start",
            "EDGEOPS:ITEM:1:STOP",
            "EDGEOPS:ITEM:1a:END",
        ] {
            assert!(parse_marker_line(bad).is_none(), "accepted {bad:?}");
        }
        assert_eq!(
            parse_marker_line("EDGEOPS:ITEM:42:START"),
            Some((42, MarkKind::Start))
        );
        assert_eq!(
            parse_marker_line("EDGEOPS:ITEM:0:END"),
            Some((0, MarkKind::End))
        );
    }

    #[test]
    fn interleaved_start_replaces_open_item() {
        let stream = "EDGEOPS:ITEM:0:START\nEDGEOPS:ITEM:1:START\nEDGEOPS:ITEM:1:END\n";
        let log = parse_markers(stream.as_bytes());
        assert_eq!(log.marks.len(), 1);
        assert_eq!(log.marks[0].item_index, 1);
        assert_eq!(log.warnings.len(), 1);
    }

    #[test]
    fn tee_observes_every_line() {
        let mut seen = Vec::new();
        parse_markers_with("a\nEDGEOPS:ITEM:0:START\nb\n".as_bytes(), |l| {
            seen.push(l.to_string())
        });
        assert_eq!(seen, vec!["a", "EDGEOPS:ITEM:0:START", "b"]);
    }
}
