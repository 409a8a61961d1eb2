fn main() {
    std::process::exit(hierwalk_cli::run(std::env::args_os()));
}
