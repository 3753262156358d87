fn main() {
    std::process::exit(rooted_consensus::cli::main_with_args(std::env::args_os()));
}
