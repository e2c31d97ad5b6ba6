fn main() {
    std::process::exit(cropmix_cli::run(std::env::args_os()));
}
