fn main() {
    std::process::exit(relight_cli::run(std::env::args_os()));
}
