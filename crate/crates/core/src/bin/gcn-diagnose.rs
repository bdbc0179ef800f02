fn main() {
    std::process::exit(gcn_diagnose::cli::dispatch(std::env::args_os()));
}
