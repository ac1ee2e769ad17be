fn main() {
    std::process::exit(coast_cli::dispatch(std::env::args_os()));
}
