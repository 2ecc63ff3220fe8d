fn main() {
    std::process::exit(exdbscan_bench::cli::main_with_args(std::env::args_os()));
}
