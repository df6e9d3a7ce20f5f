fn main() {
    std::process::exit(xaikit_cli::run(std::env::args_os()));
}
