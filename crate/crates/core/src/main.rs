fn main() {
    mobile_traps::cli::run_main();
}
