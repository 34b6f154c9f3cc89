fn main() {
    std::process::exit(actuplace::cli::dispatch(std::env::args_os()));
}
