fn main() {
    std::process::exit(nelsim::cli::dispatch(std::env::args_os()));
}
