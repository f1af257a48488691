//! Batch experiment orchestration (placeholder while the estimator stack is built).

pub fn run_main() {
    eprintln!("CLI not wired yet");
    std::process::exit(2);
}
