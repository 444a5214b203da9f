//! Synthetic workloads with known resource profiles, for exercising the
//! harness: a single-thread CPU spin, a memory allocator that emits item
//! markers, and a plain sleep.

use std::io::Write;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "edgebench-workload", about = "Synthetic benchmark workloads")]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    /// Busy-spin one thread for the given number of seconds.
    Spin { seconds: f64 },
    /// Allocate and touch the given number of MiB, then hold it while
    /// looping over `items` marker-delimited work items.
    Alloc {
        mib: usize,
        #[arg(default_value_t = 0)]
        items: usize,
        /// Duration of each item, seconds.
        #[arg(long, default_value_t = 0.2)]
        item_seconds: f64,
        /// Extra hold time after the last item, seconds.
        #[arg(long, default_value_t = 1.0)]
        hold_seconds: f64,
    },
    /// Sleep for the given number of seconds.
    Sleep { seconds: f64 },
}

fn spin_for(duration: Duration) {
    let end = Instant::now() + duration;
    let mut acc: u64 = 0x9e3779b97f4a7c15;
    while Instant::now() < end {
        for _ in 0..10_000 {
            acc = acc
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
        }
        std::hint::black_box(acc);
    }
}

fn marker(line: String) {
    let mut out = std::io::stdout().lock();
    // stdout is pipe-buffered under the harness: flush per marker so the
    // reader timestamps the line when it was emitted
    writeln!(out, "{line}").expect("stdout closed");
    out.flush().expect("stdout closed");
}

fn main() {
    let cli = Cli::parse();
    match cli.mode {
        Mode::Spin { seconds } => spin_for(Duration::from_secs_f64(seconds)),
        Mode::Sleep { seconds } => std::thread::sleep(Duration::from_secs_f64(seconds)),
        Mode::Alloc {
            mib,
            items,
            item_seconds,
            hold_seconds,
        } => {
            // nonzero fill so every page is really resident
            let mut block = vec![1u8; mib * 1024 * 1024];
            std::hint::black_box(block.as_mut_ptr());
            for j in 0..items {
                marker(format!("EDGEOPS:ITEM:{j}:START"));
                // touch a stripe of the block as this item's "work"
                let chunk = block.len() / items.max(1);
                let stripe = &mut block[j * chunk..(j + 1) * chunk];
                for b in stripe.iter_mut().step_by(4096) {
                    *b = b.wrapping_add(1);
                }
                std::hint::black_box(stripe.first());
                std::thread::sleep(Duration::from_secs_f64(item_seconds));
                marker(format!("EDGEOPS:ITEM:{j}:END"));
            }
            std::thread::sleep(Duration::from_secs_f64(hold_seconds));
            std::hint::black_box(block.last());
        }
    }
}
