fn main() {
    std::process::exit(safr_cli::run(std::env::args_os()));
}
